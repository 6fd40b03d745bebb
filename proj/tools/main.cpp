#include "bioseq/app/cli.hpp"

int main(int argc, char** argv) { return bioseq::app::cli_main(argc, argv); }
