#include "subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace evolve {

namespace {

void drain(int fd, std::string& sink) {
  char buf[4096];
  while (true) {
    ssize_t n = ::read(fd, buf, sizeof(buf));
    if (n <= 0) break;
    sink.append(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace

CommandResult run_command(const std::vector<std::string>& argv,
                          const std::filesystem::path& workdir,
                          int timeout_s) {
  if (argv.empty()) {
    throw std::invalid_argument("run_command: empty argv");
  }
  int out_pipe[2], err_pipe[2];
  if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
    throw std::runtime_error("run_command: pipe() failed");
  }

  pid_t pid = fork();
  if (pid < 0) {
    throw std::runtime_error("run_command: fork() failed");
  }
  if (pid == 0) {
    setpgid(0, 0);  // own process group so timeouts kill children too
    if (!workdir.empty()) {
      if (chdir(workdir.c_str()) != 0) _exit(127);
    }
    dup2(out_pipe[1], STDOUT_FILENO);
    dup2(err_pipe[1], STDERR_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[0]);
    close(err_pipe[1]);
    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);
    execvp(cargv[0], cargv.data());
    _exit(127);
  }

  close(out_pipe[1]);
  close(err_pipe[1]);
  fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
  fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

  CommandResult result;
  auto deadline =
      std::chrono::steady_clock::now() + std::chrono::seconds(timeout_s);
  bool out_open = true, err_open = true;

  while (out_open || err_open) {
    if (std::chrono::steady_clock::now() > deadline) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      break;
    }
    pollfd fds[2];
    nfds_t n = 0;
    if (out_open) fds[n++] = {out_pipe[0], POLLIN, 0};
    if (err_open) fds[n++] = {err_pipe[0], POLLIN, 0};
    int rv = poll(fds, n, 200);
    if (rv < 0 && errno != EINTR) break;
    for (nfds_t i = 0; i < n; ++i) {
      if (fds[i].revents == 0) continue;
      bool is_out = fds[i].fd == out_pipe[0];
      if (fds[i].revents & POLLIN) {
        drain(fds[i].fd, is_out ? result.out : result.err);
      }
      if (fds[i].revents & (POLLHUP | POLLERR)) {
        drain(fds[i].fd, is_out ? result.out : result.err);
        if (is_out) {
          out_open = false;
        } else {
          err_open = false;
        }
      }
    }
  }

  close(out_pipe[0]);
  close(err_pipe[0]);

  int status = 0;
  waitpid(pid, &status, 0);
  if (result.timed_out) {
    result.exit_code = -1;
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.exit_code = -WTERMSIG(status);
  }
  return result;
}

bool executable_exists(const std::string& cmd) {
  if (cmd.find('/') != std::string::npos) {
    return access(cmd.c_str(), X_OK) == 0;
  }
  const char* path_env = std::getenv("PATH");
  if (path_env == nullptr) return false;
  std::stringstream ss(path_env);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) continue;
    std::string full = dir + "/" + cmd;
    if (access(full.c_str(), X_OK) == 0) return true;
  }
  return false;
}

}  // namespace evolve
