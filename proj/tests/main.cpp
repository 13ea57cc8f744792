#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "layoutseq/log.hpp"

int main(int argc, char** argv) {
  layoutseq::init_logging();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
