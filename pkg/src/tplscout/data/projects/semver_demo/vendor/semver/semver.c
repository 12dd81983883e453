/*
 * semver.c
 *
 * Copyright (c) 2015-2017 Tomas Aparicio
 * MIT licensed
 */

#include <stdlib.h>
#include <string.h>
#include "semver.h"

#define SLICE_SIZE   50
#define DELIMITER    "."
#define PR_DELIMITER "-"
#define MT_DELIMITER "+"

static int
parse_int (const char *s) {
  char *end;
  long v = strtol(s, &end, 10);
  if (end == s || *end != '\0' || v < 0) return -1;
  return (int) v;
}

int
semver_parse_version (const char *str, semver_t *ver) {
  char buf[SLICE_SIZE];
  char *slice, *next;
  int parts[3] = {0, 0, 0};
  int i = 0;

  if (strlen(str) >= SLICE_SIZE) return -1;
  strcpy(buf, str);
  for (slice = strtok_r(buf, DELIMITER, &next); slice && i < 3;
       slice = strtok_r(NULL, DELIMITER, &next)) {
    parts[i] = parse_int(slice);
    if (parts[i++] < 0) return -1;
  }
  ver->major = parts[0];
  ver->minor = parts[1];
  ver->patch = parts[2];
  return 0;
}

int
semver_parse (const char *str, semver_t *ver) {
  char buf[SLICE_SIZE];
  char *mt, *pr;

  if (strlen(str) >= SLICE_SIZE) return -1;
  strcpy(buf, str);
  ver->metadata = NULL;
  ver->prerelease = NULL;
  if ((mt = strstr(buf, MT_DELIMITER)) != NULL) {
    *mt++ = '\0';
    ver->metadata = strdup(mt);
  }
  if ((pr = strstr(buf, PR_DELIMITER)) != NULL) {
    *pr++ = '\0';
    ver->prerelease = strdup(pr);
  }
  return semver_parse_version(buf, ver);
}

int
semver_compare (semver_t x, semver_t y) {
  if (x.major != y.major) return x.major > y.major ? 1 : -1;
  if (x.minor != y.minor) return x.minor > y.minor ? 1 : -1;
  if (x.patch != y.patch) return x.patch > y.patch ? 1 : -1;
  return 0;
}

int
semver_satisfies (semver_t x, semver_t y, const char *op) {
  int c = semver_compare(x, y);
  if (strcmp(op, ">=") == 0) return c >= 0;
  if (strcmp(op, "<=") == 0) return c <= 0;
  if (strcmp(op, ">") == 0) return c > 0;
  if (strcmp(op, "<") == 0) return c < 0;
  return c == 0;
}

void
semver_bump (semver_t *x) {
  x->major++;
}

void
semver_free (semver_t *x) {
  free(x->metadata);
  free(x->prerelease);
  x->metadata = NULL;
  x->prerelease = NULL;
}
