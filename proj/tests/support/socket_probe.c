#define _GNU_SOURCE
#include <dlfcn.h>
#include <fcntl.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <unistd.h>

/* Appends one line per socket() call to $ALTER_SOCKET_LOG. */
int socket(int domain, int type, int protocol) {
  const char* log = getenv("ALTER_SOCKET_LOG");
  if (log != NULL) {
    int fd = open(log, O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd >= 0) {
      char line[64];
      int n = snprintf(line, sizeof line, "socket %d %d %d\n", domain, type, protocol);
      if (n > 0) (void)!write(fd, line, (size_t)n);
      close(fd);
    }
  }
  int (*real)(int, int, int) = (int (*)(int, int, int))dlsym(RTLD_NEXT, "socket");
  return real(domain, type, protocol);
}
