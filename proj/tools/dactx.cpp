#include "dactx/cli.hpp"

int main(int argc, char** argv) { return dactx::run_cli(argc, argv); }
