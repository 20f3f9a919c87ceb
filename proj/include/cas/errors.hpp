#pragma once

#include <stdexcept>
#include <string>

namespace cas {

/// Malformed or unresolvable input (unknown capability labels, bad config,
/// schema violations). The CLI maps this to exit code 1.
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Requested capability is not in the closure the derivation starts from.
class NotDerivable : public std::runtime_error {
public:
  explicit NotDerivable(const std::string& msg) : std::runtime_error(msg) {}
};

/// TemplateDb has no template for the requested capability.
class MissingTemplate : public std::runtime_error {
public:
  explicit MissingTemplate(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller asked for work the module refuses to do (unsafe closure handed
/// to PAB construction, brute-force diagnostics over the node cap, ...).
class RefusalError : public std::runtime_error {
public:
  explicit RefusalError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cas
