#include "commands.hpp"

int main(int argc, char** argv) { return unica::cli::run(argc, argv); }
