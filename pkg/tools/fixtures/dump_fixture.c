/*
 * Independent reference dump for the committed fixtures: splits an Annex B
 * stream into access units with libavcodec's own H.264 parser and records
 * each unit's byte size plus picture type, in stream (decode) order.  The
 * JSON this emits is committed next to the .264 file and treated as the
 * ground truth the Python parser must reproduce byte-for-byte.
 *
 *     cc tools/fixtures/dump_fixture.c -o /tmp/dump_fixture \
 *        $(pkg-config --cflags --libs libavcodec libavutil)
 *     /tmp/dump_fixture tests/fixtures/intra_only.264 > tests/fixtures/intra_only.dump.json
 */
#include <libavcodec/avcodec.h>
#include <stdio.h>
#include <stdlib.h>

int main(int argc, char **argv) {
    if (argc != 2) { fprintf(stderr, "usage: %s stream.264\n", argv[0]); return 2; }

    FILE *f = fopen(argv[1], "rb");
    if (!f) { perror(argv[1]); return 1; }
    fseek(f, 0, SEEK_END);
    long fsize = ftell(f);
    fseek(f, 0, SEEK_SET);
    uint8_t *buf = malloc(fsize + AV_INPUT_BUFFER_PADDING_SIZE);
    if (fread(buf, 1, fsize, f) != (size_t)fsize) { fprintf(stderr, "short read\n"); return 1; }
    memset(buf + fsize, 0, AV_INPUT_BUFFER_PADDING_SIZE);
    fclose(f);

    const AVCodec *codec = avcodec_find_decoder(AV_CODEC_ID_H264);
    AVCodecContext *ctx = avcodec_alloc_context3(codec);
    AVCodecParserContext *parser = av_parser_init(AV_CODEC_ID_H264);
    if (!parser) { fprintf(stderr, "no h264 parser\n"); return 1; }

    printf("{\n  \"file\": \"%s\",\n  \"total_bytes\": %ld,\n", argv[1], fsize);
    printf("  \"au_sizes_bytes\": [");

    long consumed_total = 0, split_total = 0;
    int nau = 0;
    char types[4096];

    uint8_t *data = buf;
    long remaining = fsize;
    /* flush with remaining == 0 exactly once to drain the final unit */
    int flushed = 0;
    while (remaining > 0 || !flushed) {
        uint8_t *out = NULL;
        int out_size = 0;
        int used = av_parser_parse2(parser, ctx, &out, &out_size,
                                    data, (int)remaining,
                                    AV_NOPTS_VALUE, AV_NOPTS_VALUE, 0);
        if (remaining == 0)
            flushed = 1;
        data += used;
        remaining -= used;
        consumed_total += used;
        if (out_size > 0) {
            char t = '?';
            switch (parser->pict_type) {
                case AV_PICTURE_TYPE_I: t = 'I'; break;
                case AV_PICTURE_TYPE_P: t = 'P'; break;
                case AV_PICTURE_TYPE_B: t = 'B'; break;
                default: break;
            }
            printf("%s%d", nau ? ", " : "", out_size);
            if (nau < (int)sizeof(types) - 1)
                types[nau] = t;
            nau++;
            split_total += out_size;
        }
    }
    types[nau < (int)sizeof(types) ? nau : (int)sizeof(types) - 1] = 0;

    printf("],\n  \"pict_types\": \"%s\",\n", types);
    printf("  \"sum_au_bytes\": %ld,\n  \"au_count\": %d\n}\n", split_total, nau);

    if (split_total != fsize)
        fprintf(stderr, "WARNING: AU sizes sum %ld != file size %ld\n", split_total, fsize);

    av_parser_close(parser);
    avcodec_free_context(&ctx);
    free(buf);
    return 0;
}
