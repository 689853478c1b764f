#pragma once

// Shared fixtures for the test binaries: scratch directories and a small
// subprocess runner for driving the command-line tool.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace testutil {

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "loaddev-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (mkdtemp(buf.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path);
}

inline std::string shell_quote(const std::string& arg) {
  std::string quoted = "'";
  for (char c : arg) {
    if (c == '\'')
      quoted += "'\\''";
    else
      quoted += c;
  }
  quoted += "'";
  return quoted;
}

struct ProcResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Run `argv` with stdout/stderr captured into files under `scratch`.
inline ProcResult run_process(const std::vector<std::string>& argv, const TempDir& scratch) {
  std::string out_path = scratch.file(".proc_out");
  std::string err_path = scratch.file(".proc_err");
  std::string command;
  for (const std::string& arg : argv) {
    if (!command.empty()) command += ' ';
    command += shell_quote(arg);
  }
  command += " > " + shell_quote(out_path) + " 2> " + shell_quote(err_path);
  int status = std::system(command.c_str());
  ProcResult result;
  if (status == -1)
    result.exit_code = -1;
  else if (WIFEXITED(status))
    result.exit_code = WEXITSTATUS(status);
  else
    result.exit_code = 128;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

}  // namespace testutil
