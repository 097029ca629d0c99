#pragma once

#include <sys/wait.h>

#include <cstdio>
#include <map>
#include <string>
#include <string_view>

#include "panodepth/error.hpp"

namespace panodepth::curation {

struct ProcessResult {
  int exit_code = -1;
  std::string output;  // captured standard output
};

/// POSIX shell single-quoting.
inline std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

/// Replaces each `{name}` in `tmpl` with the shell-quoted value. Every
/// placeholder in `required` must occur; unknown placeholders are an error.
inline std::string expand_command(std::string_view tmpl, const std::map<std::string, std::string>& values,
                                  std::initializer_list<std::string_view> required) {
  for (auto r : required) {
    if (tmpl.find("{" + std::string(r) + "}") == std::string_view::npos) {
      throw ArgumentError("command template lacks the {" + std::string(r) + "} placeholder: " + std::string(tmpl));
    }
  }
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const std::size_t close = tmpl.find('}', open);
    if (close == std::string_view::npos) throw ArgumentError("unterminated placeholder in command template");
    out.append(tmpl.substr(pos, open - pos));
    const std::string key(tmpl.substr(open + 1, close - open - 1));
    const auto it = values.find(key);
    if (it == values.end()) throw ArgumentError("unknown placeholder {" + key + "} in command template");
    out += shell_quote(it->second);
    pos = close + 1;
  }
  return out;
}

/// Runs `command` through /bin/sh, capturing standard output. When
/// `merge_stderr` is set, standard error is captured as well.
inline ProcessResult run_command(const std::string& command, bool merge_stderr) {
  const std::string full = merge_stderr ? "(" + command + ") 2>&1" : command;
  std::FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) throw std::runtime_error("failed to launch: " + command);
  ProcessResult res;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) res.output.append(buf, n);
  const int status = ::pclose(pipe);
  if (status == -1) {
    res.exit_code = -1;
  } else if (WIFEXITED(status)) {
    res.exit_code = WEXITSTATUS(status);
  } else {
    res.exit_code = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  }
  return res;
}

}  // namespace panodepth::curation
