#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace celldeploy {

/// Frozen embeddings from an external command run through /bin/sh.
/// Protocol: prompt + '\n' on stdin, one line of space-separated reals on
/// stdout. Calls are serialized and results cached by prompt text.
class ExternalEncoder {
 public:
  ExternalEncoder(std::string command, int dim);

  /// Throws ProviderUnavailable (no command, spawn failure, non-zero exit),
  /// MalformedOutput or DimensionMismatch.
  std::vector<double> encode(const std::string& text);

  const std::string& command() const { return command_; }
  int dim() const { return dim_; }

 private:
  std::string command_;
  int dim_;
  std::mutex mutex_;
  std::map<std::string, std::vector<double>> cache_;
};

/// One uncached provider call.
std::vector<double> external_encode(const std::string& command, int dim, const std::string& text);

}  // namespace celldeploy
