#include "pbr/child_process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>

namespace pbr {

namespace {

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

}  // namespace

std::string run_child(const std::string& command, const std::string& input, std::chrono::milliseconds timeout) {
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw ChildError(std::string("pipe: ") + std::strerror(errno));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw ChildError(std::string("pipe: ") + std::strerror(errno));
  }
  ::signal(SIGPIPE, SIG_IGN);
  pid_t pid = ::fork();
  if (pid < 0) throw ChildError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  int wfd = in_pipe[1], rfd = out_pipe[0];
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::size_t written = 0;
  std::string out;
  bool timed_out = false;
  char buf[4096];
  while (rfd >= 0) {
    struct pollfd fds[2];
    int n = 0;
    fds[n++] = {rfd, POLLIN, 0};
    if (wfd >= 0) fds[n++] = {wfd, POLLOUT, 0};
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    int rc = ::poll(fds, n, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      ssize_t k = ::read(rfd, buf, sizeof buf);
      if (k > 0)
        out.append(buf, static_cast<std::size_t>(k));
      else if (k == 0 || errno != EINTR)
        close_fd(rfd);
    }
    if (n == 2 && fds[1].revents) {
      if (fds[1].revents & POLLOUT) {
        ssize_t k = ::write(wfd, input.data() + written, input.size() - written);
        if (k > 0) written += static_cast<std::size_t>(k);
        if (k < 0 && errno != EINTR && errno != EAGAIN) close_fd(wfd);
        if (written == input.size()) close_fd(wfd);
      } else {
        close_fd(wfd);
      }
    }
  }
  close_fd(wfd);
  close_fd(rfd);
  if (timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (timed_out) throw ChildError("reward command timed out after " + std::to_string(timeout.count()) + " ms");
  if (WIFSIGNALED(status)) throw ChildError("reward command killed by signal " + std::to_string(WTERMSIG(status)));
  if (WIFEXITED(status) && WEXITSTATUS(status) != 0)
    throw ChildError("reward command exited with status " + std::to_string(WEXITSTATUS(status)));
  return out;
}

}  // namespace pbr
