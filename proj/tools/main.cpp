#include "commands.hpp"

int main(int argc, char** argv) { return spill::cli::run(argc, argv); }
