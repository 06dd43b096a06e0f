#include "ntg/cli.hpp"

int main(int argc, char** argv) { return ntg::cli_main(argc, argv); }
