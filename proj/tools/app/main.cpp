#include "app.hpp"

int main(int argc, char** argv) { return nova::app::run_cli(argc, argv); }
