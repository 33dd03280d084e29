//! Native-code extraction from relocatable object files.
//!
//! Pulls the raw bytes of every executable section out of an ELF or COFF
//! object, concatenated in ascending file-offset order, relocations left
//! as stored. Every read is bounds-checked: malformed input yields an error
//! with the failing offset, never a panic.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::SourceFormat;
use crate::{Error, Result};

const ELF_MAGIC: [u8; 4] = [0x7f, b'E', b'L', b'F'];
const ET_REL: u16 = 1;
const SHT_PROGBITS: u32 = 1;
const SHF_EXECINSTR: u64 = 0x4;
const COFF_SCN_CNT_CODE: u32 = 0x0000_0020;

/// Concatenated executable-section bytes of a relocatable object.
pub fn extract_code_section(bytes: &[u8], format: SourceFormat) -> Result<Vec<u8>> {
    match format {
        SourceFormat::Elf => extract_elf(bytes),
        SourceFormat::Coff => extract_coff(bytes),
        SourceFormat::Raw => crate::corpus::ingest_raw(bytes),
    }
}

fn parse_err(offset: usize, what: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        what: what.into(),
    }
}

struct View<'a> {
    b: &'a [u8],
}

impl<'a> View<'a> {
    fn slice(&self, off: u64, len: u64, what: &str) -> Result<&'a [u8]> {
        let end = off
            .checked_add(len)
            .ok_or_else(|| parse_err(off as usize, format!("{what}: offset overflow")))?;
        if end > self.b.len() as u64 {
            return Err(parse_err(
                off.min(usize::MAX as u64) as usize,
                format!("{what}: runs past end of file"),
            ));
        }
        Ok(&self.b[off as usize..end as usize])
    }

    fn u16(&self, off: u64, le: bool, what: &str) -> Result<u16> {
        let s = self.slice(off, 2, what)?;
        let v = [s[0], s[1]];
        Ok(if le {
            u16::from_le_bytes(v)
        } else {
            u16::from_be_bytes(v)
        })
    }

    fn u32(&self, off: u64, le: bool, what: &str) -> Result<u32> {
        let s = self.slice(off, 4, what)?;
        let v = [s[0], s[1], s[2], s[3]];
        Ok(if le {
            u32::from_le_bytes(v)
        } else {
            u32::from_be_bytes(v)
        })
    }

    fn u64(&self, off: u64, le: bool, what: &str) -> Result<u64> {
        let s = self.slice(off, 8, what)?;
        let v = [s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7]];
        Ok(if le {
            u64::from_le_bytes(v)
        } else {
            u64::from_be_bytes(v)
        })
    }
}

fn extract_elf(bytes: &[u8]) -> Result<Vec<u8>> {
    let v = View { b: bytes };
    if bytes.len() < 16 || bytes[..4] != ELF_MAGIC {
        return Err(parse_err(0, "not an ELF file"));
    }
    let is64 = match bytes[4] {
        1 => false,
        2 => true,
        c => return Err(parse_err(4, format!("unknown ELF class {c}"))),
    };
    let le = match bytes[5] {
        1 => true,
        2 => false,
        d => return Err(parse_err(5, format!("unknown ELF data encoding {d}"))),
    };
    let e_type = v.u16(16, le, "e_type")?;
    if e_type != ET_REL {
        return Err(parse_err(
            16,
            format!("ELF type {e_type} is not a relocatable object"),
        ));
    }
    let (shoff, shentsize, mut shnum) = if is64 {
        (
            v.u64(0x28, le, "e_shoff")?,
            v.u16(0x3a, le, "e_shentsize")? as u64,
            v.u16(0x3c, le, "e_shnum")? as u64,
        )
    } else {
        (
            v.u32(0x20, le, "e_shoff")? as u64,
            v.u16(0x2e, le, "e_shentsize")? as u64,
            v.u16(0x30, le, "e_shnum")? as u64,
        )
    };
    if shoff == 0 {
        return Err(parse_err(0, "object has no section header table"));
    }
    let min_entsize: u64 = if is64 { 64 } else { 40 };
    if shentsize < min_entsize {
        return Err(parse_err(
            shoff as usize,
            format!("section header entry size {shentsize} too small"),
        ));
    }
    // shnum == 0 with a header table means the real count lives in the size
    // field of section 0.
    if shnum == 0 {
        shnum = if is64 {
            v.u64(shoff + 0x20, le, "extended section count")?
        } else {
            v.u32(shoff + 0x14, le, "extended section count")? as u64
        };
    }
    if shnum > 0x10000 {
        return Err(parse_err(
            shoff as usize,
            format!("implausible section count {shnum}"),
        ));
    }

    let mut code: Vec<(u64, u64)> = Vec::new();
    for i in 0..shnum {
        let base =
            shoff
                .checked_add(i.checked_mul(shentsize).ok_or_else(|| {
                    parse_err(shoff as usize, "section header table size overflow")
                })?)
                .ok_or_else(|| parse_err(shoff as usize, "section header table size overflow"))?;
        let sh_type = v.u32(base + 4, le, "sh_type")?;
        let (sh_flags, sh_offset, sh_size) = if is64 {
            (
                v.u64(base + 8, le, "sh_flags")?,
                v.u64(base + 24, le, "sh_offset")?,
                v.u64(base + 32, le, "sh_size")?,
            )
        } else {
            (
                v.u32(base + 8, le, "sh_flags")? as u64,
                v.u32(base + 16, le, "sh_offset")? as u64,
                v.u32(base + 20, le, "sh_size")? as u64,
            )
        };
        if sh_type == SHT_PROGBITS && sh_flags & SHF_EXECINSTR != 0 && sh_size > 0 {
            // Validate now so a lying header fails loudly.
            v.slice(sh_offset, sh_size, "section contents")?;
            code.push((sh_offset, sh_size));
        }
    }
    concat_sections(bytes, code)
}

fn extract_coff(bytes: &[u8]) -> Result<Vec<u8>> {
    let v = View { b: bytes };
    if bytes.len() >= 2 && &bytes[..2] == b"MZ" {
        return Err(parse_err(0, "PE executable, not a COFF object"));
    }
    if bytes.len() < 20 {
        return Err(parse_err(0, "too short for a COFF header"));
    }
    let nsections = v.u16(2, true, "section count")? as u64;
    if nsections == 0 {
        return Err(parse_err(2, "COFF object declares no sections"));
    }
    let opt_size = v.u16(16, true, "optional header size")? as u64;
    let table = 20 + opt_size;

    let mut code: Vec<(u64, u64)> = Vec::new();
    for i in 0..nsections {
        let base = table + i * 40;
        // Make sure the whole 40-byte header is present.
        v.slice(base, 40, "section header")?;
        let size = v.u32(base + 16, true, "section raw size")? as u64;
        let ptr = v.u32(base + 20, true, "section raw pointer")? as u64;
        let characteristics = v.u32(base + 36, true, "section characteristics")?;
        if characteristics & COFF_SCN_CNT_CODE != 0 && size > 0 && ptr != 0 {
            v.slice(ptr, size, "section contents")?;
            code.push((ptr, size));
        }
    }
    concat_sections(bytes, code)
}

fn concat_sections(bytes: &[u8], mut sections: Vec<(u64, u64)>) -> Result<Vec<u8>> {
    if sections.is_empty() {
        return Err(Error::Input(
            "object contains no executable code section".into(),
        ));
    }
    // File order: ascending content offset; header order breaks ties.
    sections.sort_by_key(|&(off, _)| off);
    let mut out = Vec::new();
    for (off, len) in sections {
        out.extend_from_slice(&bytes[off as usize..(off + len) as usize]);
    }
    Ok(out)
}
