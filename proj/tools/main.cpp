#include "celldeploy/cli.hpp"

int main(int argc, char** argv) { return celldeploy::cli::run(argc, argv); }
