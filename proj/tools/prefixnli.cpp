#include "cli/app.hpp"

int main(int argc, char** argv) { return prefixnli::cli::run(argc, argv); }
