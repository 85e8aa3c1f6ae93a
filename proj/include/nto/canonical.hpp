#pragma once

// Built-in problem suite. Loads have unit total magnitude.

#include <string>
#include <vector>

#include "nto/problem.hpp"

namespace nto {

std::vector<std::string> canonical_names();
/// ShortBeam, LongBeam, Distributed, Bridge, Beam3D, Bridge3D, and Cantilever (the uniform-density
/// forward-solve check with a distributed tip shear). Throws ConfigError for unknown names.
ProblemSpec canonical_problem(const std::string& name);

}  // namespace nto
