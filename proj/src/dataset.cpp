#include "her2flex/dataset.hpp"

#include "her2flex/png_io.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

namespace her2flex {

namespace fs = std::filesystem;

ParsedName parse_name(const std::string& filename) {
  const std::string base = fs::path(filename).stem().string();
  const auto last = base.rfind('_');
  if (last == std::string::npos || last == 0 || last + 1 >= base.size())
    fail(Errc::missing_grade, "no grade token in '" + filename + "'");
  const auto grade = grade_from_label(base.substr(last + 1));
  if (!grade) fail(Errc::missing_grade, "unrecognized grade token in '" + filename + "'");
  const std::string stem = base.substr(0, last);
  if (stem.find('_') == std::string::npos)
    fail(Errc::missing_grade, "missing <split> token in '" + filename + "'");
  return ParsedName{stem, *grade};
}

namespace {

std::map<std::string, std::pair<std::string, Her2Grade>> scan_dir(const std::string& dir) {
  require(fs::is_directory(dir), Errc::io_error, "not a directory: " + dir);
  std::map<std::string, std::pair<std::string, Her2Grade>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const ParsedName parsed = parse_name(name);
    out[parsed.stem] = {entry.path().string(), parsed.grade};
  }
  return out;
}

}  // namespace

std::vector<PairedSample> load_dataset(const std::string& he_dir, const std::string& ihc_dir,
                                       bool require_pairs) {
  const auto he_files = he_dir.empty() ? decltype(scan_dir("")){} : scan_dir(he_dir);
  const auto ihc_files = ihc_dir.empty() ? decltype(scan_dir("")){} : scan_dir(ihc_dir);

  std::map<std::string, PairedSample> by_stem;
  for (const auto& [stem, file] : he_files) {
    PairedSample s;
    s.id = stem;
    s.grade = file.second;
    s.he = read_png(file.first);
    by_stem.emplace(stem, std::move(s));
  }
  for (const auto& [stem, file] : ihc_files) {
    auto it = by_stem.find(stem);
    if (it == by_stem.end()) {
      PairedSample s;
      s.id = stem;
      s.grade = file.second;
      s.ihc = read_png(file.first);
      by_stem.emplace(stem, std::move(s));
    } else {
      require(it->second.grade == file.second, Errc::grade_mismatch,
              "pair '" + stem + "' has conflicting grades");
      it->second.ihc = read_png(file.first);
    }
  }

  std::vector<PairedSample> samples;
  samples.reserve(by_stem.size());
  for (auto& [stem, sample] : by_stem) {
    if (require_pairs)
      require(sample.he.has_value() && sample.ihc.has_value(), Errc::unpaired_sample,
              "stem '" + stem + "' lacks its counterpart");
    samples.push_back(std::move(sample));
  }
  return samples;  // std::map iteration is already id-sorted
}

SplitResult split_dataset(std::vector<PairedSample> samples, std::uint64_t seed) {
  const size_t n = samples.size();
  require(n >= 10, Errc::too_few_samples, "split needs at least 10 samples");

  std::sort(samples.begin(), samples.end(),
            [](const PairedSample& a, const PairedSample& b) { return a.id < b.id; });
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(derive_seed(seed, 0x5f317));
  std::shuffle(order.begin(), order.end(), rng);

  const size_t n_val = n / 10;
  const size_t n_test = n / 10;
  SplitResult out;
  for (size_t i = 0; i < n; ++i) {
    PairedSample& s = samples[order[i]];
    if (i < n_val)
      out.val.push_back(std::move(s));
    else if (i < n_val + n_test)
      out.test.push_back(std::move(s));
    else
      out.train.push_back(std::move(s));
  }
  return out;
}

}  // namespace her2flex
