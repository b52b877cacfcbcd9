#include "tgsm/cli.hpp"

int main(int argc, char** argv) { return tgsm::cli::run(argc, argv); }
