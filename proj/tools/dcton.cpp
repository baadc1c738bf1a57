#include "dcton/cli.hpp"

int main(int argc, char** argv) { return dcton::cli::dispatch(argc, argv); }
