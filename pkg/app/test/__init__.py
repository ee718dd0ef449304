# splitrec tests
