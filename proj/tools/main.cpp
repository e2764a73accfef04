#include "cli_app.hpp"

int main(int argc, char** argv) { return bdice::cli_main(argc, argv); }
