#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "../support/doctest_torch.hpp"
