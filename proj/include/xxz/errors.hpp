#pragma once

#include <stdexcept>
#include <string>

namespace xxz {

// Exception hierarchy mapped to process exit codes by the CLI:
//   validation_error -> 2   (bad parameters / config / domain violations)
//   numerical_error  -> 3   (solver breakdown, non-finite results, failed quadrature)
//   cache_error      -> 4   (missing, corrupt or version-mismatched cache files)

class validation_error : public std::runtime_error {
public:
  explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

class numerical_error : public std::runtime_error {
public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

class cache_error : public std::runtime_error {
public:
  explicit cache_error(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 2;
inline constexpr int exit_numerical = 3;
inline constexpr int exit_cache = 4;

} // namespace xxz
