#include "trafficlens/cli.hpp"

int main(int argc, char** argv) { return trafficlens::cli::run(argc, argv); }
