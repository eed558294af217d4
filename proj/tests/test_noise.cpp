#include <doctest.h>

TEST_SUITE_BEGIN("noise");

TEST_SUITE_END();
