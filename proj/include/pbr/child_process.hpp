#pragma once

#include <chrono>
#include <stdexcept>
#include <string>

namespace pbr {

class ChildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs `/bin/sh -c command`, feeds `input` on stdin and returns everything the
// child wrote to stdout. Throws ChildError on timeout, signal or nonzero exit.
std::string run_child(const std::string& command, const std::string& input, std::chrono::milliseconds timeout);

}  // namespace pbr
