#include "ppcov/cli.hpp"

int main(int argc, char** argv)
{
  return ppcov::cli::run(argc, argv);
}
