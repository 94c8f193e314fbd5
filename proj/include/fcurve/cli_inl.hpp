#pragma once

#include <exception>
#include <ostream>

#include "fcurve/errors.hpp"

namespace fcurve {

template <typename Body>
int run_guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace fcurve
