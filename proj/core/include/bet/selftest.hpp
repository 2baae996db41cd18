#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace bet {

// A self-check throws (any std::exception) to fail.
struct SelfCheck {
    std::string name;
    std::function<void()> run;
};

// Gradient checks for every differentiable op and the full training loss,
// codec round-trip and Lloyd monotonicity, closed-form loss oracles, and env
// demo replay. Designed to finish well under a minute.
std::vector<SelfCheck> standard_selftest_checks();

// prints one [PASS]/[FAIL] line per check; returns the number of failures
int run_selfchecks(const std::vector<SelfCheck>& checks, std::ostream& out);

}  // namespace bet
