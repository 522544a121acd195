#include "streetvae_cli/commands.hpp"

int main(int argc, char** argv) { return streetvae::cli::run_cli(argc, argv); }
