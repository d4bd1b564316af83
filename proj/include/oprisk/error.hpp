#ifndef OPRISK_ERROR_HPP
#define OPRISK_ERROR_HPP

#include <stdexcept>
#include <string>

namespace oprisk {

/// Bad input: out-of-domain parameters, malformed data, violated preconditions.
class validation_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver ran out of iterations or bracket before meeting tolerance.
class convergence_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Expert opinions that no member of the prior family can satisfy.
class infeasible_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw validation_error(msg);
}

} // namespace detail

} // namespace oprisk

#endif // OPRISK_ERROR_HPP
