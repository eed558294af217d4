#include <doctest.h>

TEST_SUITE_BEGIN("readout");

TEST_SUITE_END();
