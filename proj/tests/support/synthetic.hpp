#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "alter/table.hpp"

namespace alter::testing {

/// Stations table: Station, Line, Opened, Riders, Length (km). Row i is a pure
/// function of i; every row has the same token layout.
Table make_transit_table(std::size_t rows, std::string id = "transit");

/// Base rows followed by (factor - 1) * base_rows filler rows whose values
/// stay inside the base value ranges and share the base cell shapes.
Table scale_transit_table(std::size_t base_rows, int factor);

/// Random words and numbers; `cols` columns named c0..cN.
Table random_table(std::mt19937_64& rng, std::size_t rows, std::size_t cols, std::string id);

/// A few words drawn from the random_table vocabulary.
std::string random_query(std::mt19937_64& rng);

}  // namespace alter::testing
