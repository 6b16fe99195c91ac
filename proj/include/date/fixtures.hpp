#pragma once

#include "date/backend.hpp"
#include "date/generation.hpp"
#include "date/rules.hpp"
#include "date/table.hpp"

#include <string>
#include <vector>

namespace date {

/// piecewise, greedy_trap, duplicate_markers, mixture2.
std::vector<std::string> fixture_names();

/// Deterministic synthetic dataset. Throws ArgumentError on an unknown name.
///
/// piecewise is a regression step function of `x` whose region 8.5 <= x < 9.5
/// is absent from the first 60% of rows and overrepresented in the rest; run
/// it with an ordered split. greedy_trap is the concatenation of the
/// train, val and held-out tables of greedy_trap_instance.
Table make_fixture(const std::string& name, std::uint64_t seed);

/// Target column of a fixture.
std::string fixture_target(const std::string& name);

/// True when the fixture ships its rows in train/val/test order.
bool fixture_ordered(const std::string& name);

/// Ground-truth labeling function, for the synthetic backend.
SyntheticBackend::Labeler fixture_oracle(const std::string& name);

/// Hand-built arm set on which picking the best single arm first is a trap:
/// arms 0 and 2 each carry half the rows needed to flip a pocket of
/// validation rows, arm 1 flips a smaller pocket on its own.
struct GreedyTrap {
    Table train;
    Table val;
    Table heldout;
    std::vector<Example> context;
    std::vector<ArmCandidate> arms;
};

GreedyTrap greedy_trap_instance(std::uint64_t seed);

}  // namespace date
