#include "her2flex/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <variant>
#include <vector>

namespace her2flex {

namespace {

using FieldRef = std::variant<int*, float*, bool*, std::string*, std::uint64_t*>;

struct Field {
  const char* section;
  const char* key;
  FieldRef ref;
};

std::vector<Field> fields(RunConfig& c) {
  return {
      {"data", "root", &c.data_root},
      {"data", "patch_size", &c.patch_size},
      {"synth", "n_per_grade", &c.synth_per_grade},
      {"synth", "size", &c.synth_size},
      {"model", "c_s", &c.c_s},
      {"model", "c_he", &c.c_he},
      {"model", "c_ihc", &c.c_ihc},
      {"model", "c_reduced", &c.c_reduced},
      {"model", "reduction_ratio", &c.reduction_ratio},
      {"model", "pyramid_levels", &c.pyramid_levels},
      {"model", "gen_base", &c.gen_base},
      {"model", "disc_base", &c.disc_base},
      {"model", "selector_base", &c.selector_base},
      {"model", "baseline_base", &c.baseline_base},
      {"loss", "lambda1", &c.lambda1},
      {"loss", "lambda2", &c.lambda2},
      {"loss", "lambda3", &c.lambda3},
      {"loss", "lambda4", &c.lambda4},
      {"loss", "class_weight_mode", &c.class_weight_mode},
      {"train", "seed", &c.seed},
      {"train", "lr", &c.lr},
      {"train", "poly_power", &c.poly_power},
      {"train", "weight_decay", &c.weight_decay},
      {"train", "batch_size", &c.batch_size},
      {"train", "epochs_selector", &c.epochs_selector},
      {"train", "epochs_cmgan", &c.epochs_cmgan},
      {"train", "epochs_classifier", &c.epochs_classifier},
      {"train", "epochs_joint", &c.epochs_joint},
      {"train", "modality_dropout", &c.modality_dropout},
      {"augment", "enabled", &c.aug_enabled},
      {"augment", "rotation_max_deg", &c.aug_rotation_max_deg},
      {"augment", "hflip", &c.aug_hflip},
      {"augment", "vflip", &c.aug_vflip},
      {"augment", "crop_fraction", &c.aug_crop_fraction},
      {"augment", "brightness_delta", &c.aug_brightness_delta},
      {"augment", "contrast_delta", &c.aug_contrast_delta},
      {"eval", "corrupt", &c.corrupt},
      {"eval", "corrupt_brightness", &c.corrupt_brightness},
      {"eval", "corrupt_noise_sigma", &c.corrupt_noise_sigma},
      {"eval", "tsne_perplexity", &c.tsne_perplexity},
      {"eval", "tsne_iterations", &c.tsne_iterations},
  };
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

void assign(const Field& f, const std::string& raw) {
  const std::string value = trim(raw);
  try {
    if (auto* p = std::get_if<int*>(&f.ref)) {
      **p = std::stoi(value);
    } else if (auto* p = std::get_if<float*>(&f.ref)) {
      **p = std::stof(value);
    } else if (auto* p = std::get_if<bool*>(&f.ref)) {
      if (value == "true" || value == "1")
        **p = true;
      else if (value == "false" || value == "0")
        **p = false;
      else
        fail(Errc::bad_config, "expected boolean for " + std::string(f.key));
    } else if (auto* p = std::get_if<std::string*>(&f.ref)) {
      **p = value;
    } else if (auto* p = std::get_if<std::uint64_t*>(&f.ref)) {
      **p = std::stoull(value);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(Errc::bad_config,
         "cannot parse value '" + value + "' for " + f.section + "." + f.key);
  }
}

std::string format(const FieldRef& ref) {
  char buf[64];
  if (auto* p = std::get_if<int*>(&ref)) {
    std::snprintf(buf, sizeof(buf), "%d", **p);
  } else if (auto* p = std::get_if<float*>(&ref)) {
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(**p));
  } else if (auto* p = std::get_if<bool*>(&ref)) {
    return **p ? "true" : "false";
  } else if (auto* p = std::get_if<std::string*>(&ref)) {
    return **p;
  } else if (auto* p = std::get_if<std::uint64_t*>(&ref)) {
    std::snprintf(buf, sizeof(buf), "%llu", static_cast<unsigned long long>(**p));
  } else {
    return "";
  }
  return buf;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  auto table = fields(cfg);
  std::map<std::pair<std::string, std::string>, const Field*> lookup;
  for (const auto& f : table) lookup[{f.section, f.key}] = &f;

  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', Errc::bad_config,
              "malformed section at line " + std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, Errc::bad_config,
            "expected key = value at line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const auto it = lookup.find({section, key});
    require(it != lookup.end(), Errc::bad_config,
            "unknown config key [" + section + "] " + key);
    assign(*it->second, line.substr(eq + 1));
  }
  validate_config(cfg);
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), Errc::io_error, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_text(const RunConfig& cfg) {
  auto table = fields(const_cast<RunConfig&>(cfg));
  std::string out;
  std::string section;
  for (const auto& f : table) {
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + format(f.ref) + "\n";
  }
  return out;
}

void validate_config(const RunConfig& cfg) {
  require(cfg.lambda1 >= 0 && cfg.lambda2 >= 0 && cfg.lambda3 >= 0 && cfg.lambda4 >= 0,
          Errc::bad_config, "loss weights must be nonnegative");
  require(cfg.patch_size >= 16 && cfg.patch_size % 4 == 0, Errc::bad_config,
          "patch_size must be a multiple of 4 and at least 16");
  require(cfg.pyramid_levels >= 1, Errc::bad_config, "pyramid_levels must be >= 1");
  require(cfg.c_reduced % cfg.reduction_ratio == 0, Errc::bad_config,
          "reduction_ratio must divide c_reduced");
  require(cfg.class_weight_mode == "inverse_freq" || cfg.class_weight_mode == "uniform",
          Errc::bad_config, "class_weight_mode must be inverse_freq or uniform");
  require(cfg.corrupt == "none" || cfg.corrupt == "he" || cfg.corrupt == "ihc", Errc::bad_config,
          "corrupt must be none, he or ihc");
  require(cfg.batch_size >= 1, Errc::bad_config, "batch_size must be >= 1");
  require(cfg.modality_dropout >= 0.0f && cfg.modality_dropout <= 1.0f, Errc::bad_config,
          "modality_dropout must lie in [0, 1]");
}

}  // namespace her2flex
