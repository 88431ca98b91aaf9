#include "mazero/cli/commands.hpp"

int main(int argc, char** argv) { return mazero::cli::Main(argc, argv); }
