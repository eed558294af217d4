#include <doctest.h>

TEST_SUITE_BEGIN("io-cli");

TEST_SUITE_END();
