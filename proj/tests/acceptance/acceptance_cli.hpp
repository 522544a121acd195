#pragma once

#include <string>
#include <utility>

// pass flag and a one-line detail
std::pair<bool, std::string> run_determinism_check();
std::pair<bool, std::string> run_constants_check();
