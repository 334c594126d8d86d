#include "uidpipe/error.hpp"

namespace uidpipe {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const ConvergenceError*>(&e)) return 4;
  if (dynamic_cast<const ArgumentError*>(&e)) return 2;
  return 1;
}

}  // namespace uidpipe
