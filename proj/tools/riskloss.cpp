#include "riskloss/cli/commands.hpp"

int main(int argc, char** argv) { return riskloss::cli::run(argc, argv); }
