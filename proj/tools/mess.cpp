#include "mess_cli.hpp"

int main(int argc, char** argv) { return mess::cli::run(argc, argv); }
