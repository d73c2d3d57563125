#include "primhand/cli.hpp"

int main(int argc, char** argv) { return primhand::cli::run(argc, argv); }
