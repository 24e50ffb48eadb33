#include "celldeploy/prompt.hpp"

#include <cctype>
#include <cstdio>

#include "celldeploy/errors.hpp"

namespace celldeploy {

namespace {

constexpr std::string_view kHead =
    "Task: Optimize base station positioning and orientation to cater to users based on their 3D locations. "
    "Objective: Maximize signal strengths for all the users. User details provided:";
constexpr std::string_view kTail = " Utilize this data to configure the base station for optimal signal distribution.";

constexpr const char* kWords[] = {
    "Task",   "Optimize", "base",      "station", "positioning", "and",       "orientation", "to",
    "cater",  "users",    "based",     "on",      "their",       "3D",        "locations",   "Objective",
    "Maximize", "signal", "strengths", "for",     "all",         "the",       "User",        "details",
    "provided", "at",     "position",  "gets",    "dB",          "Utilize",   "this",        "data",
    "configure", "optimal", "distribution"};

constexpr std::string_view kPoint = "<point>";

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  std::string s(buf);
  if (s == "-0.0") s = "0.0";
  return s;
}

std::string render_prompt(std::span<const UserSpec> users, std::span<const double> powers_dbm) {
  if (users.size() != powers_dbm.size())
    throw LengthMismatch("render_prompt: " + std::to_string(users.size()) + " users but " +
                         std::to_string(powers_dbm.size()) + " powers");
  std::string out(kHead);
  for (std::size_t i = 0; i < users.size(); ++i) {
    const Vec3& p = users[i].position;
    out += " User " + std::to_string(i + 1) + " at position (" + format_number(p.x) + "," + format_number(p.y) + "," +
           format_number(p.z) + ") gets " + format_number(powers_dbm[i]) + " dB";
    out += i + 1 < users.size() ? "," : ".";
  }
  out += kTail;
  return out;
}

Tokenizer::Tokenizer() {
  vocab_ = {"<start>", std::string(kPoint), "-"};
  for (char d = '0'; d <= '9'; ++d) vocab_.emplace_back(1, d);
  for (const char* p : {":", ",", ".", "(", ")"}) vocab_.emplace_back(p);
  for (const char* w : kWords) vocab_.emplace_back(w);
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i));
}

const Tokenizer& Tokenizer::standard() {
  static const Tokenizer t;
  return t;
}

int Tokenizer::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) throw UnknownToken("token '" + std::string(token) + "' is not in the prompt vocabulary");
  return it->second;
}

const std::string& Tokenizer::token(int id) const {
  if (id < 0 || id >= vocab_size()) throw UnknownToken("token id " + std::to_string(id) + " out of range");
  return vocab_[static_cast<std::size_t>(id)];
}

std::vector<int> Tokenizer::tokenize(std::string_view text, int max_seq_len) const {
  std::vector<int> ids{start_id()};
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const char c = text[i];
    if (c == ' ') {
      ++i;
    } else if (is_alpha(c) || is_digit(c)) {
      std::size_t j = i;
      bool has_alpha = false;
      while (j < n && (is_alpha(text[j]) || is_digit(text[j]))) has_alpha |= is_alpha(text[j++]);
      if (has_alpha) {
        ids.push_back(id(text.substr(i, j - i)));
      } else {
        for (std::size_t k = i; k < j; ++k) ids.push_back(id(text.substr(k, 1)));
      }
      i = j;
    } else if (c == '.' && i > 0 && i + 1 < n && is_digit(text[i - 1]) && is_digit(text[i + 1])) {
      ids.push_back(id(kPoint));
      ++i;
    } else if (c == '-' && i + 1 < n && is_digit(text[i + 1])) {
      ids.push_back(id("-"));
      ++i;
    } else {
      ids.push_back(id(text.substr(i, 1)));
      ++i;
    }
  }
  if (static_cast<int>(ids.size()) > max_seq_len)
    throw SequenceTooLong("prompt has " + std::to_string(ids.size()) + " tokens, limit is " + std::to_string(max_seq_len));
  return ids;
}

std::string Tokenizer::detokenize(std::span<const int> ids) const {
  std::string out;
  int depth = 0;
  bool first = true;
  std::string_view prev;
  const auto numeric = [](std::string_view t) { return t == kPoint || (t.size() == 1 && is_digit(t[0])); };
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const std::string& t = token(ids[k]);
    if (k == 0 && ids[k] == start_id()) continue;
    const bool glue = first || t == ":" || t == "," || t == "." || t == ")" || prev == "(" ||
                      (prev == "," && depth > 0) || ((prev == "-" || numeric(prev)) && numeric(t));
    if (!glue) out += ' ';
    out += t == kPoint ? std::string(".") : t;
    if (t == "(") ++depth;
    if (t == ")") --depth;
    prev = t;
    first = false;
  }
  return out;
}

}  // namespace celldeploy
