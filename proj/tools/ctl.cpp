#include "ctl/experiments.hpp"

int main(int argc, char** argv) { return ctl::cli::main_entry(argc, argv); }
