#include "histo/cli/app.hpp"

int main(int argc, char** argv) { return histo::cli::run_cli(argc, argv); }
