#include "kslab/commands.hpp"

int main(int argc, char** argv) { return kslab::run_cli(argc, argv); }
