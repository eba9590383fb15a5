#include "her2flex/cli.hpp"

int main(int argc, char** argv) { return her2flex::run_cli(argc, argv); }
