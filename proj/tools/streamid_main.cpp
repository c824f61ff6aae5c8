#include "streamid/cli.hpp"

int main(int argc, char** argv) { return streamid::run_cli(argc, argv); }
