#include "predpca/types.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace predpca {

namespace {

std::mutex g_warning_mutex;

WarningHandler& handler_slot() {
  static WarningHandler handler = [](const std::string& message) {
    std::cerr << "warning: " << message << "\n";
  };
  return handler;
}

}  // namespace

WarningHandler set_warning_handler(WarningHandler handler) {
  std::lock_guard<std::mutex> lock(g_warning_mutex);
  WarningHandler previous = std::move(handler_slot());
  handler_slot() = std::move(handler);
  return previous;
}

void warn(const std::string& message) {
  WarningHandler snapshot;
  {
    std::lock_guard<std::mutex> lock(g_warning_mutex);
    snapshot = handler_slot();
  }
  if (snapshot) snapshot(message);
}

}  // namespace predpca
