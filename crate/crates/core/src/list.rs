//! Immutable singly linked list with shared tails.

use std::rc::Rc;

use crate::model::Value;

#[derive(Clone, Default)]
pub struct List(Option<Rc<Cons>>);

struct Cons {
    head: Value,
    tail: List,
}

impl List {
    pub fn nil() -> Self {
        List(None)
    }

    pub fn cons(head: Value, tail: List) -> Self {
        List(Some(Rc::new(Cons { head, tail })))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn first(&self) -> Option<&Value> {
        self.0.as_ref().map(|c| &c.head)
    }

    /// Tail of the list; the empty list's tail is itself.
    pub fn rest(&self) -> List {
        match &self.0 {
            Some(c) => c.tail.clone(),
            None => List::nil(),
        }
    }

    pub fn iter(&self) -> Iter<'_> {
        Iter { next: self.0.as_deref() }
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn get(&self, index: usize) -> Option<&Value> {
        self.iter().nth(index)
    }

    /// Prepends the elements of `prefix` (in order) to `self`.
    pub fn prepend_all(&self, prefix: &[Value]) -> List {
        prefix.iter().rev().fold(self.clone(), |acc, v| List::cons(v.clone(), acc))
    }
}

impl FromIterator<Value> for List {
    fn from_iter<I: IntoIterator<Item = Value>>(iter: I) -> Self {
        let items: Vec<Value> = iter.into_iter().collect();
        List::nil().prepend_all(&items)
    }
}

pub struct Iter<'a> {
    next: Option<&'a Cons>,
}

impl<'a> Iterator for Iter<'a> {
    type Item = &'a Value;

    fn next(&mut self) -> Option<&'a Value> {
        let cell = self.next?;
        self.next = cell.tail.0.as_deref();
        Some(&cell.head)
    }
}

impl<'a> IntoIterator for &'a List {
    type Item = &'a Value;
    type IntoIter = Iter<'a>;

    fn into_iter(self) -> Iter<'a> {
        self.iter()
    }
}

impl PartialEq for List {
    fn eq(&self, other: &Self) -> bool {
        let mut a = self.iter();
        let mut b = other.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return true,
                (Some(x), Some(y)) if x == y => {}
                _ => return false,
            }
        }
    }
}

impl std::fmt::Debug for List {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

// Long lists would otherwise drop recursively, one stack frame per cell.
impl Drop for List {
    fn drop(&mut self) {
        let mut next = self.0.take();
        while let Some(rc) = next {
            match Rc::try_unwrap(rc) {
                Ok(mut cell) => next = cell.tail.0.take(),
                Err(_) => break,
            }
        }
    }
}
