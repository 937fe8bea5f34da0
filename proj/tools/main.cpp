#include "fluidsim/cli.hpp"

int main(int argc, char** argv) {
    return fluidsim::run_cli(argc, argv);
}
