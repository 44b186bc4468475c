/* Runs NP30-TR for 100 steps on a small grid and prints the relative error.
 *
 *   cargo build --release -p tbc-ffi
 *   cc -I crates/tbc-ffi/include crates/tbc-ffi/examples/demo.c \
 *      target/release/libtbc_ffi.a -lm -lpthread -ldl -o demo
 */
#include <stdio.h>

#include "tbc.h"

int main(void) {
    const char *config =
        "n = 48\n"
        "domain = [-8.0, 8.0, -8.0, 8.0]\n"
        "t_max = 0.1\n"
        "dt = 1e-3\n"
        "c0 = 2.0\n";
    TbcHandle *h = NULL;
    TbcStatus s = tbc_handle_new(config, &h);
    if (s != TBC_STATUS_OK) {
        char msg[256];
        tbc_last_error(msg, sizeof msg);
        fprintf(stderr, "%s: %s\n", tbc_status_name(s), msg);
        return (int)s;
    }
    s = tbc_handle_step(h, 100);
    double t = 0.0, err = 0.0;
    tbc_handle_time(h, &t);
    tbc_handle_relative_error(h, &err);
    printf("%s t = %.3f relative error = %.3e (%s)\n", tbc_handle_label(h), t, err, tbc_status_name(s));
    tbc_handle_free(h);
    return s == TBC_STATUS_OK ? 0 : 1;
}
