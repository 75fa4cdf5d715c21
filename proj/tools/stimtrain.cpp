#include "stimtrain/harness.hpp"

int main(int argc, char** argv) { return stimtrain::harness::run_cli(argc, argv); }
