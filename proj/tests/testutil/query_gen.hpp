#pragma once

#include <random>
#include <string>

namespace sqlrefine::testutil {

/// Grammar-driven random SELECT statement in the supported dialect subset.
/// Every produced string parses by construction.
std::string random_query(std::mt19937_64& rng, int max_depth = 2);

}  // namespace sqlrefine::testutil
