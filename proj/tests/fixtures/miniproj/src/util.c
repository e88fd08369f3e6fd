#include <stdlib.h>
#include <string.h>
#include "util.h"

int parse_term(const char **p)
{
    if (**p == '(') {
        (*p)++;
        int v = parse_expr(p);
        (*p)++;
        return v;
    }
    return *(*p)++ - '0';
}

char *dup_string(const char *s, size_t n)
{
    char *d = calloc(n + 1, 1);
    if (d != NULL) {
        strncpy(d, s, n);
        if (n > 0 && s[n - 1] == '\n')
            d[n - 1] = '\0';
    }
    return d;
}
