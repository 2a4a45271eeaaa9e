#pragma once

#include <stdexcept>
#include <string>

namespace sideobs {

/// Instance sampling could not produce a unique optimal arm at every node.
class degenerate_instance_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Context set spans nothing (all vectors zero).
class degenerate_contexts_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative procedure hit its iteration cap.
class non_convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Gram matrix had to be inverted but is singular.
class singular_gram_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The allocation program has no feasible point.
class infeasible_program_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sideobs

namespace sideobs {

/// Malformed or inconsistent experiment configuration.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Output location cannot be written.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sideobs
