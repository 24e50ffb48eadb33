#include "celldeploy/external_encoder.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "celldeploy/errors.hpp"

namespace celldeploy {

namespace {

struct Pipe {
  int fd[2] = {-1, -1};
  ~Pipe() {
    for (int f : fd)
      if (f >= 0) ::close(f);
  }
  void close_end(int i) {
    if (fd[i] >= 0) ::close(fd[i]);
    fd[i] = -1;
  }
};

std::string run_provider(const std::string& command, const std::string& input) {
  // A provider that ignores stdin may exit before reading; writes must not kill us.
  static const bool sigpipe_ignored = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;
  Pipe in, out;
  if (::pipe(in.fd) != 0 || ::pipe(out.fd) != 0) throw ProviderUnavailable("cannot create pipes for embedding provider");
  const pid_t pid = ::fork();
  if (pid < 0) throw ProviderUnavailable("cannot fork embedding provider");
  if (pid == 0) {
    ::dup2(in.fd[0], STDIN_FILENO);
    ::dup2(out.fd[1], STDOUT_FILENO);
    for (int f : {in.fd[0], in.fd[1], out.fd[0], out.fd[1]}) ::close(f);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  in.close_end(0);
  out.close_end(1);

  std::size_t written = 0;
  while (written < input.size()) {
    const ssize_t n = ::write(in.fd[1], input.data() + written, input.size() - written);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    written += static_cast<std::size_t>(n);
  }
  in.close_end(1);

  std::string output;
  char buf[4096];
  for (;;) {
    const ssize_t n = ::read(out.fd[0], buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    output.append(buf, static_cast<std::size_t>(n));
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw ProviderUnavailable("embedding provider '" + command + "' exited with status " +
                              std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  return output;
}

std::vector<double> parse_reply(const std::string& output, int dim) {
  const std::size_t eol = output.find('\n');
  const std::string line = output.substr(0, eol);
  std::istringstream ss(line);
  std::vector<double> values;
  std::string word;
  while (ss >> word) {
    char* end = nullptr;
    const double v = std::strtod(word.c_str(), &end);
    if (end == word.c_str() || *end != '\0' || !std::isfinite(v))
      throw MalformedOutput("embedding provider emitted non-numeric value '" + word + "'");
    values.push_back(v);
  }
  if (values.empty()) throw MalformedOutput("embedding provider emitted no values");
  if (static_cast<int>(values.size()) != dim)
    throw DimensionMismatch("embedding provider emitted " + std::to_string(values.size()) + " values, expected " +
                            std::to_string(dim));
  return values;
}

}  // namespace

std::vector<double> external_encode(const std::string& command, int dim, const std::string& text) {
  if (command.empty()) throw ProviderUnavailable("no embedding provider configured");
  if (dim < 1) throw DimensionMismatch("embedding dimension must be >= 1");
  return parse_reply(run_provider(command, text + "\n"), dim);
}

ExternalEncoder::ExternalEncoder(std::string command, int dim) : command_(std::move(command)), dim_(dim) {}

std::vector<double> ExternalEncoder::encode(const std::string& text) {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = cache_.find(text);
  if (it != cache_.end()) return it->second;
  auto v = external_encode(command_, dim_, text);
  cache_.emplace(text, v);
  return v;
}

}  // namespace celldeploy
