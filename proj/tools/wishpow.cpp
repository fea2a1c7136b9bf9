#include "wishpow/cli.hpp"

int main(int argc, char** argv) { return wishpow::cli::parse_and_dispatch(argc, argv); }
