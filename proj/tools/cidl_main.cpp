#include <cidl/cli.hpp>

int main(int argc, char** argv) { return cidl::cli_main(argc, argv); }
