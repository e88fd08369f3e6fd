#ifndef UTIL_H
#define UTIL_H

#include <stddef.h>

/* Parses a term; may recurse into parse_expr. */
int parse_term(const char **p);
int parse_expr(const char **p);
char *dup_string(const char *s, size_t n);

#endif
