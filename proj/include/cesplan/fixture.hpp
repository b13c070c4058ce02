#pragma once

// Seeded synthetic community: a 7-node radial LV feeder with 30 residential
// customers, morning and evening load peaks, rooftop PV on every customer
// and the five-window time-of-use tariff.

#include <cstdint>

#include "cesplan/scenario.hpp"

namespace cesplan {

struct FixtureOptions {
  std::uint64_t seed = 42;
  int days = 7;
  int customers = 30;
};

/// Deterministic for a given seed. Throws Error{InvalidParameter}.
Scenario synthetic_fixture(const FixtureOptions& options = {});

}  // namespace cesplan
