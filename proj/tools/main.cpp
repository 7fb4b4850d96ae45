#include "quivernet/cli.hpp"

int main(int argc, char** argv) { return quivernet::run(argc, argv); }
