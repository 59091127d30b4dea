/* Thin wrapper over libjpeg used as an independent reference codec in tests. */

#include <setjmp.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include <jpeglib.h>

struct jo_err {
  struct jpeg_error_mgr pub;
  jmp_buf jump;
  int warnings;
  char first_warning[JMSG_LENGTH_MAX];
};

static void jo_error_exit(j_common_ptr cinfo) {
  struct jo_err *err = (struct jo_err *)cinfo->err;
  longjmp(err->jump, 1);
}

static void jo_emit_message(j_common_ptr cinfo, int msg_level) {
  struct jo_err *err = (struct jo_err *)cinfo->err;
  if (msg_level < 0) {
    if (err->warnings == 0) {
      (*cinfo->err->format_message)(cinfo, err->first_warning);
    }
    err->warnings++;
  }
}

static void jo_copy_message(j_common_ptr cinfo, char *out, int out_len) {
  char buf[JMSG_LENGTH_MAX];
  (*cinfo->err->format_message)(cinfo, buf);
  if (out && out_len > 0) {
    strncpy(out, buf, (size_t)out_len - 1);
    out[out_len - 1] = 0;
  }
}

void jo_free(unsigned char *p) { free(p); }

/* Returns 0 on success. `pixels` is row-major interleaved, `components` is 1 or 3. */
int jo_encode(const unsigned char *pixels, int width, int height, int components,
              int quality, const int *h_samp, const int *v_samp,
              int restart_interval, int optimize, int progressive, int arith,
              unsigned char **out, unsigned long *out_len, char *errmsg,
              int errlen) {
  struct jpeg_compress_struct cinfo;
  struct jo_err jerr;
  unsigned char *mem = NULL;
  unsigned long mem_len = 0;

  memset(&jerr, 0, sizeof(jerr));
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jo_error_exit;
  jerr.pub.emit_message = jo_emit_message;
  if (setjmp(jerr.jump)) {
    jo_copy_message((j_common_ptr)&cinfo, errmsg, errlen);
    jpeg_destroy_compress(&cinfo);
    if (mem) free(mem);
    return 1;
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &mem, &mem_len);
  cinfo.image_width = (JDIMENSION)width;
  cinfo.image_height = (JDIMENSION)height;
  cinfo.input_components = components;
  cinfo.in_color_space = components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  for (int c = 0; c < cinfo.num_components; c++) {
    cinfo.comp_info[c].h_samp_factor = h_samp[c];
    cinfo.comp_info[c].v_samp_factor = v_samp[c];
  }
  cinfo.restart_interval = (unsigned int)restart_interval;
  cinfo.optimize_coding = optimize ? TRUE : FALSE;
  if (arith) cinfo.arith_code = TRUE;
  if (progressive) jpeg_simple_progression(&cinfo);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = (JSAMPROW)(pixels + (size_t)cinfo.next_scanline *
                                           (size_t)width * (size_t)components);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  *out = mem;
  *out_len = mem_len;
  return 0;
}

/* Full decode. Returns 0 when libjpeg finished without a fatal error.
   Warnings (corrupt data, premature end, extraneous bytes, bad restart
   markers) are counted separately. `pixels_out` may be NULL. */
int jo_decode(const unsigned char *buf, unsigned long len, int *width,
              int *height, int *components, long *mcus, int *warnings,
              char *warnmsg, int warnlen, unsigned char **pixels_out,
              char *errmsg, int errlen) {
  struct jpeg_decompress_struct cinfo;
  struct jo_err jerr;
  unsigned char *pixels = NULL;

  memset(&jerr, 0, sizeof(jerr));
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jo_error_exit;
  jerr.pub.emit_message = jo_emit_message;
  if (setjmp(jerr.jump)) {
    jo_copy_message((j_common_ptr)&cinfo, errmsg, errlen);
    *warnings = jerr.warnings;
    jpeg_destroy_decompress(&cinfo);
    if (pixels) free(pixels);
    return 1;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, buf, len);
  jpeg_read_header(&cinfo, TRUE);
  jpeg_start_decompress(&cinfo);
  *width = (int)cinfo.output_width;
  *height = (int)cinfo.output_height;
  *components = cinfo.output_components;
  *mcus = (long)cinfo.MCUs_per_row * (long)cinfo.MCU_rows_in_scan;
  size_t stride = (size_t)cinfo.output_width * (size_t)cinfo.output_components;
  pixels = (unsigned char *)malloc(stride * cinfo.output_height + 1);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels + (size_t)cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  *warnings = jerr.warnings;
  if (warnmsg && warnlen > 0) {
    strncpy(warnmsg, jerr.first_warning, (size_t)warnlen - 1);
    warnmsg[warnlen - 1] = 0;
  }
  if (pixels_out) {
    *pixels_out = pixels;
  } else {
    free(pixels);
  }
  return 0;
}
