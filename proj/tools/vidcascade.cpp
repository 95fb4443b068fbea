#include "vidcascade/cli.hpp"

int main(int argc, char** argv) { return vidcascade::run_cli(argc, argv); }
