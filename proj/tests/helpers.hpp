#pragma once

#include "predpca/types.hpp"

#include <string>
#include <vector>

namespace predpca::testing {

/// Capture warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    previous_ = set_warning_handler([this](const std::string& msg) {
      messages.push_back(msg);
    });
  }
  ~WarningCapture() { set_warning_handler(previous_); }

  bool contains(const std::string& needle) const {
    for (const std::string& msg : messages)
      if (msg.find(needle) != std::string::npos) return true;
    return false;
  }

  std::vector<std::string> messages;

 private:
  WarningHandler previous_;
};

/// Silence warnings for the lifetime of the object (noisy-by-design tests).
class WarningMute {
 public:
  WarningMute() { previous_ = set_warning_handler([](const std::string&) {}); }
  ~WarningMute() { set_warning_handler(previous_); }

 private:
  WarningHandler previous_;
};

}  // namespace predpca::testing
