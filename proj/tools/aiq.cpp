#include "aiq/cli.hpp"

int main(int argc, char** argv) { return aiq::cli_dispatch(argc, argv, std::cout, std::cerr, std::cin); }
