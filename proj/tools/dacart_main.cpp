#include "dacart/cli.hpp"

int main(int argc, char** argv) { return dacart::run_cli(argc, argv); }
