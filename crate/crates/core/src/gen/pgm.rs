//! Binary PGM (`P5`, maxval 255).

use std::io::{self, BufRead, Write};

use super::render::Image;

pub fn write_pgm(mut out: impl Write, img: &Image) -> io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", img.width, img.height)?;
    out.write_all(&img.pixels)
}

pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut buf = Vec::with_capacity(img.pixels.len() + 16);
    write_pgm(&mut buf, img).expect("writing to a Vec cannot fail");
    buf
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Reads the next whitespace-delimited header token, skipping `#` comments.
fn token(r: &mut impl BufRead) -> io::Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let c = byte[0];
        if c == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(c as char);
    }
    if tok.is_empty() {
        return Err(bad("truncated PGM header"));
    }
    Ok(tok)
}

fn number(r: &mut impl BufRead) -> io::Result<usize> {
    token(r)?.parse().map_err(|_| bad("bad PGM header number"))
}

pub fn read_pgm(mut r: impl BufRead) -> io::Result<Image> {
    if token(&mut r)? != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let width = number(&mut r)?;
    let height = number(&mut r)?;
    let maxval = number(&mut r)?;
    if maxval != 255 {
        return Err(bad(format!("unsupported maxval {maxval}")));
    }
    let mut pixels = vec![0u8; width * height];
    r.read_exact(&mut pixels)?;
    Ok(Image { width, height, pixels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_payload() {
        let img = Image {
            width: 3,
            height: 2,
            pixels: vec![0, 1, 2, 253, 254, 255],
        };
        let bytes = encode_pgm(&img);
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(read_pgm(bytes.as_slice()).unwrap(), img);
    }

    #[test]
    fn comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([7, 9]);
        let img = read_pgm(bytes.as_slice()).unwrap();
        assert_eq!(img.pixels, vec![7, 9]);
    }

    #[test]
    fn rejects_ascii_pgm() {
        assert!(read_pgm(&b"P2\n1 1\n255\n0\n"[..]).is_err());
    }
}
