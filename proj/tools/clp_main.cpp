#include "clp/cli.hpp"

int main(int argc, char** argv) { return clp::run(argc, argv); }
